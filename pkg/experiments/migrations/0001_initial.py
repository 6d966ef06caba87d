# Generated by Django 5.2.5 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('subcommand', models.CharField(choices=[('crest', 'Crest probabilities'), ('stationary_chain', 'Truncated stationary chain'), ('k1_law', 'K1 increment law'), ('harmonic', 'Harmonic measure'), ('mc', 'Monte Carlo'), ('structure', 'Structure recovery'), ('verify', 'Verification suite')], max_length=20)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('config', models.JSONField(default=dict)),
                ('manifest', models.JSONField(blank=True, default=dict)),
                ('outputs', models.JSONField(blank=True, default=list)),
                ('status', models.CharField(choices=[('running', 'Running'), ('succeeded', 'Succeeded'), ('failed', 'Failed'), ('checks_failed', 'Checks failed')], default='running', max_length=15)),
                ('error', models.TextField(blank=True)),
                ('code_version', models.CharField(blank=True, max_length=60)),
                ('threads', models.PositiveIntegerField(default=1)),
                ('runtime_seconds', models.FloatField(blank=True, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['subcommand', 'created_at'], name='run_subcommand_idx'), models.Index(fields=['status'], name='run_status_idx')],
                'constraints': [models.CheckConstraint(condition=models.Q(('runtime_seconds__isnull', True), ('runtime_seconds__gte', 0), _connector='OR'), name='run_runtime_nonnegative')],
            },
        ),
    ]
